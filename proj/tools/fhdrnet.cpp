#include "fhdr/cli.hpp"

int main(int argc, char** argv) { return fhdr::cli::main(argc, argv); }
