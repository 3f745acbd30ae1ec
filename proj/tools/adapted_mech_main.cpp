#include <iostream>

#include <adapted_mech/cli.hpp>

int main(int argc, char** argv) { return adapted_mech::run_cli(argc, argv, std::cout, std::cerr); }
