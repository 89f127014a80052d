#include "srcnet/cli.hpp"

int main(int argc, char** argv) { return srcnet::cli::run(argc, argv); }
