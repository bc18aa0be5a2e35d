#include "commands.hpp"

int main(int argc, char** argv) { return dtm::cli::run(argc, argv); }
