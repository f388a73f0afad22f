int load(int n)
{
    char *buf = malloc(64);
    if (n < 0)
        return -1;
    buf[0] = (char)n;
    free(buf);
    return 0;
}
