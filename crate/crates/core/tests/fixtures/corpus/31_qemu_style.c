static void vga_update_memory_access(VGACommonState *s)
{
    hwaddr base, offset, size;

    if (vga_is_retrace(s)) {
        return;
    }
    offset = (s->gr[VGA_GFX_MISC] >> 2) & 3;
    switch (offset) {
    case 0:
        base = 0xa0000;
        size = 0x20000;
        break;
    case 1:
        base = 0xa0000;
        size = 0x10000;
        break;
    default:
        base = 0xb8000;
        size = 0x8000;
        break;
    }
    memory_region_set_size(&s->chain4_alias, size);
}
