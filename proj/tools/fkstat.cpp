#include <CLI11.hpp>

#include <cstdio>

int main(int argc, char** argv) {
    CLI::App app{"fkstat placeholder"};
    CLI11_PARSE(app, argc, argv);
    std::puts("placeholder");
    return 0;
}
