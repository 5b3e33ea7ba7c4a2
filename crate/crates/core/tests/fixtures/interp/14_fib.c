int fib(int n)
{
    int a = 0;
    int b = 1;
    if (n < 0)
        return -1;
    for (int i = 0; i < n && i < 90; i++) {
        int t = a + b;
        a = b;
        b = t;
    }
    return a;
}
