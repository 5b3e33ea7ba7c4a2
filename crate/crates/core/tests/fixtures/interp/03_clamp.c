int clamp(int v, int lo, int hi)
{
    if (lo > hi) {
        int t = lo;
        lo = hi;
        hi = t;
    }
    if (v < lo)
        v = lo;
    if (v > hi)
        v = hi;
    return v;
}
