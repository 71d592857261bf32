#include <iostream>

#include "edcnn/cli.hpp"

int main(int argc, char** argv) { return edcnn::cli_main(argc, argv, std::cout, std::cerr); }
