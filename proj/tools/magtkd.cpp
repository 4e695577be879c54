#include <cstdio>
int main() { std::puts("magtkd"); return 0; }
