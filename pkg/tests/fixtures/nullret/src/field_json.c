struct json_value *field2json(struct message *msg, struct field *field, int repeated)
{
    int type = field->type;
    struct json_value *json = NULL;
    if (repeated) {
        json = json_new_array(field);
    }
    switch (type) {
    case FIELD_INT: msg->ints++; break;
    case FIELD_STR: msg->strs++; break;
    default: break;
    }
    if (!repeated) {
        return json;
    }
    if (json_fill_array(json, msg, field) < 0)
        return json_error(field);
    return json;
}
