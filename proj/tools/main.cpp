#include <cstdio>
int main() { std::puts("gridpwl placeholder"); return 0; }
