/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Checks II = I + III on every record of a 12-lead dataset.
#include <CLI11.hpp>

#include <iostream>

#include "modred/datapipe/io.hpp"
#include "modred/datapipe/synth.hpp"
#include "modred/evalkit/reports.hpp"

int main(int argc, char** argv) {
  CLI::App app{"modred-einthoven: verify lead II equals lead I plus lead III"};
  std::string manifest;
  double tol = 1e-9;
  app.add_option("manifest", manifest, "dataset manifest")->required();
  app.add_option("--tol", tol, "largest allowed |II - (I + III)|");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    double worst = 0.0;
    std::size_t failed = 0;
    const auto records = modred::data::load_dataset(manifest);
    for (const auto& r : records) {
      const double res = modred::data::einthoven_residual(r);
      worst = std::max(worst, res);
      if (res > tol) {
        ++failed;
        std::cout << "FAIL " << r.id << " residual " << modred::eval::format_real(res) << '\n';
      }
    }
    std::cout << records.size() - failed << "/" << records.size() << " records pass; max residual "
              << modred::eval::format_real(worst) << '\n';
    return failed == 0 ? 0 : static_cast<int>(modred::ExitCode::kData);
  } catch (const modred::Error& e) {
    std::cerr << "modred-einthoven: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  }
}
