// Acceptance gate: one pass/fail line per numbered criterion.
// Usage: acceptance <cli-binary> <work-dir>
//
// The work directory caches the decoration table and the cluster pool, so
// repeated runs skip the two expensive build steps.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>

#include "bbmlab/verify.hpp"

int main(int argc, char** argv) {
  using namespace bbmlab;
  using clock = std::chrono::steady_clock;

  if (argc < 3) {
    std::cerr << "usage: acceptance <cli-binary> <work-dir>\n";
    return 2;
  }
  verify::VerifyOptions opts;
  opts.cli_path = argv[1];
  opts.work_dir = argv[2];
  std::filesystem::create_directories(opts.work_dir);

  auto timed = [start = clock::now()]() mutable {
    const auto now = clock::now();
    const double s = std::chrono::duration<double>(now - start).count();
    return s;
  };

  bool all_pass = true;
  auto report = [&](const verify::SuiteResult& suite, double elapsed) {
    verify::print_suite(suite, std::cout);
    std::cout << "    (" << verify::detail::fmt(elapsed) << " s)\n"
              << std::flush;
    all_pass = all_pass && suite.pass();
  };

  try {
    double t0 = timed();
    const auto c1 = verify::criterion_oracles(opts);
    report(c1, timed() - t0);

    t0 = timed();
    std::cout << "preparing decoration table...\n" << std::flush;
    const auto table = verify::ensure_table(opts);
    std::cout << "    table ready after " << verify::detail::fmt(timed() - t0)
              << " s\n";

    t0 = timed();
    const auto c2 = verify::criterion_drw(opts, table);
    report(c2, timed() - t0);

    t0 = timed();
    std::cout << "preparing cluster pool...\n" << std::flush;
    const auto pool = verify::ensure_pool(opts, table);
    std::cout << "    pool of " << pool.size() << " ready after "
              << verify::detail::fmt(timed() - t0) << " s\n";

    t0 = timed();
    const auto c3 = verify::criterion_cluster_law(opts, pool);
    report(c3, timed() - t0);

    t0 = timed();
    auto c4 = verify::criterion_limit_profile(opts, pool);
    const auto c4b = verify::criterion_limit_fat(opts, pool);
    c4.criterion = "criterion 4 (limit suite)";
    c4.checks.insert(c4.checks.end(), c4b.checks.begin(), c4b.checks.end());
    report(c4, timed() - t0);

    t0 = timed();
    const auto c5 = verify::criterion_determinism(opts);
    report(c5, timed() - t0);
  } catch (const std::exception& e) {
    std::cout << "[FAIL] aborted: " << e.what() << "\n";
    return 1;
  }

  std::cout << (all_pass ? "ACCEPTANCE: PASS" : "ACCEPTANCE: FAIL") << "\n";
  return all_pass ? 0 : 1;
}
