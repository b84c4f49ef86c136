#include "factrl/cli.hpp"

int main(int argc, char** argv) { return factrl::cli::run(argc, argv); }
