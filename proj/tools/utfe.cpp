#include "cli.hpp"

int main(int argc, char** argv) {
  utfe::cli::keep_heap_resident();
  return utfe::cli::run(argc, argv);
}
