// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clipstream/executor.hpp"

namespace clipstream::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct CliInvocation {
  std::string subcommand;
  RunConfig run;
  std::vector<std::filesystem::path> pipeline_files;

  // convert
  std::filesystem::path src;
  std::filesystem::path out;
  std::filesystem::path splits_file;
  // create-model
  std::string model_name;
  std::filesystem::path models_root = "models";
  // inspect
  std::filesystem::path inspect_path;
};

struct ParseResult {
  std::optional<CliInvocation> invocation;
  int exit_code = kExitOk;
  std::string message;  // help text or usage error
};

ParseResult parse(const std::vector<std::string>& args);
int run(const CliInvocation& invocation, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

std::string help_text(const std::string& subcommand);

}  // namespace clipstream::cli
