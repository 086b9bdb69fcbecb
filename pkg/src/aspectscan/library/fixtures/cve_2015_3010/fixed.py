def gatherkeys(args):
    os.umask(0o77)
    keyring = '/etc/ceph/{cluster}.client.admin.keyring'.format(cluster=args.cluster)
    r = fetch_file(args=args, frompath=keyring, topath='{cluster}.client.admin.keyring'.format(cluster=args.cluster), _hosts=args.mon,)
    if not r:
        raise exc.KeyNotFoundError(keyring, args.mon)
