int wrapping(int a, int b)
{
    int x = a * 3;
    if (b != 0 && a / b > 1)
        x = x + a % b;
    x = x ^ (b << 2);
    return x;
}
