#include <cstdio>
int main() { std::puts("pstrat placeholder"); return 0; }
