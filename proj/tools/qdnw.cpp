#include "qdnw/cli.hpp"

int main(int argc, char** argv) {
    return qdnw::cli::main(argc, argv);
}
