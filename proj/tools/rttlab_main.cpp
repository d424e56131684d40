#include "rttlab/cli.hpp"

int main(int argc, char** argv) { return rttlab::cli::run(argc, argv); }
