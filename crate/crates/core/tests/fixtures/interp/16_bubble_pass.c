int bubble_pass(int a, int b, int c)
{
    int swapped = 1;
    while (swapped) {
        swapped = 0;
        if (a > b) {
            int t = a;
            a = b;
            b = t;
            swapped = 1;
        }
        if (b > c) {
            int t = b;
            b = c;
            c = t;
            swapped = 1;
        }
    }
    return a * 10000 + b * 100 + c;
}
