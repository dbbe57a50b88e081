#include "logcorr/cli.hpp"

int main(int argc, char** argv) { return logcorr::cli::main(argc, argv); }
