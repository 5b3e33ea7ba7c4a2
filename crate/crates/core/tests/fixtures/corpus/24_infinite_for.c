void spin(volatile int *flag)
{
    for (;;) {
        if (*flag)
            break;
    }
}
