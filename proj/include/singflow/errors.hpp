#pragma once

#include <stdexcept>
#include <string>

namespace singflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class CompositionError : public Error { using Error::Error; };
class StiffnessError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ExpansionError : public Error { using Error::Error; };
class CensusUnreliable : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace singflow
