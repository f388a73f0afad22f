struct node {
    int val;
};

void drop(struct node *n)
{
    free(n);
    n->val = 0;
}
