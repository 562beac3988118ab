// Single translation unit holding the amalgamated Catch2 implementation
// and its default main.
#include <catch2/catch_amalgamated.cpp>
