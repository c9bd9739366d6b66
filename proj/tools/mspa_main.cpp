#include "mspa/cli.hpp"

int main(int argc, char** argv) { return mspa::run_cli(argc, argv); }
