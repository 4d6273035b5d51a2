// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "capmine/cli.hpp"

int main(int argc, char** argv) { return capmine::run_cli(argc, argv, std::cout, std::cerr); }
