int for_no_step(int n)
{
    int s = 0;
    for (int i = n; i > 0 && s < 100;) {
        s += i;
        i = i - 2;
    }
    return s;
}
