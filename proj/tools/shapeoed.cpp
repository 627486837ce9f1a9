#include "shapeoed/pipeline/cli.hpp"

int main(int argc, char** argv) { return shapeoed::pipeline::run_cli(argc, argv); }
