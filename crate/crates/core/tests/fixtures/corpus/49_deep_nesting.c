int deep(int a, int b, int c)
{
    if (a) {
        while (b > 0) {
            for (int i = 0; i < c; i++) {
                if (i & 1)
                    b--;
                else
                    a++;
            }
            b--;
        }
    }
    return a + b;
}
