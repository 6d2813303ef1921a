// Serial reference versus OpenMP kernels: census seed phase and Ulam
// row assembly. Pass --quick for a smoke run.
#include "singflow/census.hpp"
#include "singflow/section_graph.hpp"
#include "singflow/ulam.hpp"
#include "singflow/zoo.hpp"

#include <omp.h>

#include <chrono>
#include <cstring>
#include <iomanip>
#include <iostream>

using namespace singflow;

namespace {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const std::string& name, double serial, double parallel, bool same) {
  std::cout << std::left << std::setw(34) << name << std::right << std::fixed
            << std::setprecision(3) << std::setw(10) << serial << std::setw(10) << parallel
            << std::setw(9) << std::setprecision(2) << serial / parallel << "x"
            << (same ? "  identical" : "  DIFFERENT") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  std::cout << "threads: " << omp_get_max_threads() << "\n"
            << std::left << std::setw(34) << "kernel" << std::right << std::setw(10) << "serial"
            << std::setw(10) << "parallel" << std::setw(10) << "speedup" << '\n';

  for (const std::string label : {"sharp_1", "chained_2"}) {
    CensusConfig cfg;
    cfg.horizon = quick ? 1000 : 20000;
    cfg.burn_in = quick ? 50 : 1000;
    cfg.per_node = quick ? 4 : 16;
    const ZooEntry e = zoo_entry(label);
    MeasureCensus a, b;
    const double ts = seconds([&] { a = census_serial(e, cfg); });
    const double tp = seconds([&] { b = census(e, cfg); });
    row("census " + label, ts, tp, to_json(a).dump() == to_json(b).dump());
  }
  {
    CensusConfig cfg;
    cfg.grid = quick ? 3 : 8;
    const ZooEntry e = zoo_entry("glued_suspension_2");
    MeasureCensus a, b;
    const double ts = seconds([&] { a = census_serial(e, cfg); });
    const double tp = seconds([&] { b = census(e, cfg); });
    row("census glued_suspension_2", ts, tp, to_json(a).dump() == to_json(b).dump());
  }
  for (const int n : quick ? std::vector<int>{1024} : std::vector<int>{4096, 16384, 65536}) {
    const PiecewiseMap1D f = quotient_lorenz_map(1.9, 0.75);
    UlamOperator a, b;
    const double ts = seconds([&] { a = ulam_build_serial(f, n); });
    const double tp = seconds([&] { b = ulam_build(f, n); });
    row("ulam quotient n=" + std::to_string(n), ts, tp, a.rows == b.rows);
  }
  for (const int n : quick ? std::vector<int>{1024} : std::vector<int>{4096, 16384}) {
    const PiecewiseMap1D f = winding_map(8);
    UlamOperator a, b;
    const double ts = seconds([&] { a = ulam_build_serial(f, n); });
    const double tp = seconds([&] { b = ulam_build(f, n); });
    row("ulam winding n=" + std::to_string(n), ts, tp, a.rows == b.rows);
  }
  return 0;
}
