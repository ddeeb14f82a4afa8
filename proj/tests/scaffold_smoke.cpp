// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Generates a model scaffold, compiles it against the library with a small
// driver and checks that the stub registers, loads its preprocessing file and
// raises a not-implemented error from forward().

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "clipstream/model.hpp"
#include "test_support.hpp"

namespace {

constexpr const char* kDriver = R"(#include "model.cpp"

#include <iostream>

#include "clipstream/preprocess.hpp"

int main(int argc, char** argv) {
  if (argc != 2) return 3;
  mynet_model::register_model();
  clipstream::preprocess_registry().load_file(argv[1]);
  const auto pre = clipstream::preprocess_registry().lookup("mynet_default");
  auto model = clipstream::model_registry().create("mynet", pre.output_shape(), 2);
  model->spec().validate();
  std::vector<double> data(static_cast<std::size_t>(pre.output_shape().numel()));
  try {
    model->forward({}, {1, pre.output_shape(), data});
  } catch (const clipstream::NotImplementedError& e) {
    std::cout << "stub raised: " << e.what() << "\n";
    return 0;
  }
  return 1;
}
)";

}  // namespace

int main() {
  testing::TempDir tmp("scaffold");
  const auto dir = clipstream::create_model_template("mynet", tmp / "models");
  std::ofstream(dir / "driver.cpp") << kDriver;
  const std::string exe = (dir / "driver").string();
  const std::string compile = std::string(SCAFFOLD_CXX) + " -std=c++20 -fopenmp -I" + SCAFFOLD_INCLUDE +
                              " -I" + dir.string() + " " + (dir / "driver.cpp").string() + " " +
                              SCAFFOLD_LIBRARY + " " + SCAFFOLD_LINK + " -pthread -o " + exe;
  std::cout << compile << "\n";
  if (std::system(compile.c_str()) != 0) {
    std::cerr << "scaffold failed to compile\n";
    return 1;
  }
  const std::string cmd = exe + " " + (dir / "preprocess.json").string();
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    std::cerr << "scaffold driver exited with " << rc << "\n";
    return 1;
  }
  std::cout << "scaffold smoke test passed\n";
  return 0;
}
