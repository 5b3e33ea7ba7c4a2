static void drain(struct queue *q)
{
    do {
        struct item *it = q->head;
        q->head = it->next;
        release(it);
    } while (q->head != NULL);
}
