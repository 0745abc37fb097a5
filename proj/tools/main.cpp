#include "auxseg/cli/cli.hpp"

int main(int argc, char** argv) { return auxseg::cli::run(argc, argv); }
