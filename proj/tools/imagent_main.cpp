// SPDX-License-Identifier: Apache-2.0
#include <imagent/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return imagent::cli::main(argc, argv, std::cout, std::cerr);
}
