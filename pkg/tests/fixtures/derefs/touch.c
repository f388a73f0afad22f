struct node {
    int val;
};

int touch(struct node *p, int i)
{
    struct node copy = *p;
    int v = p->val;
    struct node other = p[i];
    return v + copy.val + other.val;
}
