#include "stjm/cli.hpp"

int main(int argc, char** argv) { return stjm::cli_main(argc, argv); }
