// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/cli.hpp"

int main(int argc, char** argv) { return clipstream::cli::main(argc, argv); }
