#include "alarm_pipeline/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv)
{
    return alarm_pipeline::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
