#include "pmhmc/cli.hpp"

int main(int argc, char** argv) { return pmhmc::cli_main(argc, argv); }
