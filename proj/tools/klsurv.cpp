#include "klsurv/cli.hpp"

int main(int argc, char** argv) { return klsurv::cli::run(argc, argv); }
