int parse_pair(const char *s, int *a, int *b)
{
    int x, y;
    if (sscanf(s, "%d,%d", &x, &y) != 2)
        return -1;
    *a = x;
    *b = y;
    return 0;
}
