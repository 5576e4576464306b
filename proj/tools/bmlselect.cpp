#include "bmlselect/cli.hpp"

int main(int argc, char** argv) { return bmlselect::cli::run(argc, argv); }
