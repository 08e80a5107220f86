#include "cli.hpp"

int main(int argc, char** argv) {
  return cpath::cli::run(argc, argv);
}
