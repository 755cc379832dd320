#include "cli.hpp"

int main(int argc, char** argv) { return brim::cli::parse_and_run(argc, const_cast<const char* const*>(argv)); }
