static void mmio_write(volatile uint32_t *reg, uint32_t v)
{
    *reg = v;
    (void)*reg;
}
