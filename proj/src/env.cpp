namespace contextnav {}
