int prefix_postfix(int n)
{
    int a = n++;
    int b = ++n;
    int c = 0;
    while (n-- > 0 && c < 8)
        c++;
    return a + b + c;
}
