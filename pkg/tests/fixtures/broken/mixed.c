int alpha(int a)
{
    return a + 1;
}

int beta(int b)
{
    return b * 2;
}

int table[] = { 1, 2, @@ };

int gamma_fn(int g)
{
    return g - 1;
}
