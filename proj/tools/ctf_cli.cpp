#include <cstdio>

int main() {
    std::puts("ctf: placeholder");
    return 0;
}
