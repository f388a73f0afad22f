int run(int v)
{
    return helper(v);
}
