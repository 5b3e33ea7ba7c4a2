int break_search(int start, int target)
{
    int i = start;
    while (i < start + 20) {
        if (i * i >= target)
            break;
        i = i + 1;
    }
    return i;
}
