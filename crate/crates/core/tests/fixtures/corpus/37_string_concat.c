static void usage(void)
{
    fprintf(stderr,
            "usage: tool [options]\n"
            "  -h  help\n"
            "  -v  verbose\n");
}
