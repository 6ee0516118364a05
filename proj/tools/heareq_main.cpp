#include "heareq/cli.hpp"

int main(int argc, char** argv) { return heareq::cli::run(argc, argv); }
