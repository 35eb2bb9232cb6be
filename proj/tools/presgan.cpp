#include "presgan/cli.hpp"

int main(int argc, char** argv) { return presgan::cli::run(argc, argv); }
