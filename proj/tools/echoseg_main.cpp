#include "echoseg/cli.hpp"

int main(int argc, char** argv) { return echoseg::run_cli(argc, argv); }
