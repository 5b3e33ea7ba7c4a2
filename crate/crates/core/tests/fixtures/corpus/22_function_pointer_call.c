static int apply(int (*fn)(int), int x)
{
    if (fn == NULL)
        return x;
    return fn(x);
}
