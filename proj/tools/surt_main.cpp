#include "surt/cli.hpp"

int main(int argc, char** argv) { return surt::cli_main(argc, argv); }
