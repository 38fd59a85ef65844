#include "mlpsd/cli.hpp"

int main(int argc, char** argv) {
    return mlpsd::cli::run(argc, argv);
}
