#include "cli.hpp"

int main(int argc, char** argv)
{
    return rmtlab::cli::run_cli(argc, argv);
}
