// Copyright (c) 2026, The kinj Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "kinj/cli.hpp"

int main(int argc, char** argv) { return kinj::cli::run(argc, argv, std::cout, std::cerr); }
