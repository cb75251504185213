#include <iostream>

#include "csf/app/app.hpp"

int main(int argc, char** argv) { return csf::app::run(argc, argv, std::cout, std::cerr); }
