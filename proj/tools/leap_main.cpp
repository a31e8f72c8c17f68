#include "leap/cli.hpp"

int main(int argc, char** argv) { return leap::cli_main(argc, argv); }
