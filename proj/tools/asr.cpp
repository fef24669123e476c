#include "asr/cli.hpp"

int main(int argc, char ** argv)
{
    return asr::cli::dispatch(argc, argv);
}
