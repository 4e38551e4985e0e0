#include <iostream>

#include "hats/cli.hpp"

int main(int argc, char** argv)
{
    return hats::run_cli(argc, argv, std::cout, std::cerr);
}
