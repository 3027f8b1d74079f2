// placeholder while the core is brought up
int main() { return 0; }
