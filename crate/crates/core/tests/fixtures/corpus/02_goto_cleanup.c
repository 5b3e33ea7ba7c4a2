int open_all(struct ctx *c)
{
    int ret = -1;
    c->a = malloc(16);
    if (!c->a)
        goto fail;
    c->b = malloc(32);
    if (!c->b)
        goto fail_a;
    return 0;
fail_a:
    free(c->a);
fail:
    return ret;
}
