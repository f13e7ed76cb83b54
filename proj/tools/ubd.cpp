#include "ubd/cli.hpp"

int main(int argc, char** argv) { return ubd::cli::run(argc, argv); }
